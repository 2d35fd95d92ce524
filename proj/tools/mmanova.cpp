#include "mmanova/cli.hpp"

int main(int argc, char** argv) { return mmanova::cli::run(argc, argv); }
