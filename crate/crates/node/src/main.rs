fn main() -> std::process::ExitCode {
    trustchain_node::cli::run(std::env::args_os())
}
