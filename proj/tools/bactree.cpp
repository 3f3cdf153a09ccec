#include "bactree/cli.hpp"

int main(int argc, char** argv) { return bactree::cli::run(argc, argv); }
