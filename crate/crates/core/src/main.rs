fn main() -> std::process::ExitCode {
    dbt_recon::cli::main_with_args(std::env::args_os())
}
