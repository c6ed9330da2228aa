#include "so3vae/cli.hpp"

int main(int argc, char** argv) { return so3vae::cli::run(argc, argv); }
