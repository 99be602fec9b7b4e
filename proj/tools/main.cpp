#include "cli.hpp"

int main(int argc, char** argv) { return pimc::cli::run(argc, argv); }
