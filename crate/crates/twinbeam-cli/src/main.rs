fn main() {
    twinbeam_cli::run();
}
