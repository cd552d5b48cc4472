fn main() -> std::process::ExitCode {
    growthlab::cli::main_entry()
}
