#include "lrvi/cli.hpp"

int main(int argc, char** argv) { return lrvi::cli::run(argc, argv); }
