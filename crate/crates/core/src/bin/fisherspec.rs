fn main() -> std::process::ExitCode {
    fisherspec::cli::main()
}
