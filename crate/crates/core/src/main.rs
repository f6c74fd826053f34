fn main() -> std::process::ExitCode {
    tlmor::cli::main_entry()
}
