fn main() -> std::process::ExitCode {
    geoaudit::cli::main()
}
