fn main() {
    std::process::exit(nci_lab_cli::dispatch(std::env::args_os()));
}
