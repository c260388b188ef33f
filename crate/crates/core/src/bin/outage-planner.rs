fn main() {
    std::process::exit(outage_planner::cli::main_with_args(std::env::args_os()));
}
