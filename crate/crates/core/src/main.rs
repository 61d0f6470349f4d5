fn main() { std::process::exit(lesion_seg::cli::run()) }
