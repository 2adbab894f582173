fn main() {
    env_logger::init();
    std::process::exit(spike_sens::cli::run(std::env::args_os()));
}
