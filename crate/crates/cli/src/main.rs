fn main() -> std::process::ExitCode {
    loopsoup_cli::main_entry()
}
