fn main() -> std::process::ExitCode {
    simgraph::cli::run(std::env::args_os())
}
