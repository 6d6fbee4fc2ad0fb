fn main() {
    std::process::exit(annealed_grg::cli::main_entry());
}
