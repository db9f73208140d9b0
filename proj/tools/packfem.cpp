#include "packfem/cli.hpp"

int main(int argc, char** argv) { return packfem::cli::main(argc, argv); }
