fn main() {
    std::process::exit(stereo_eeg_cli::run(std::env::args_os()));
}
