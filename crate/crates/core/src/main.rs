fn main() {
    std::process::exit(mesh_diffusion::cli::run(std::env::args_os()));
}
