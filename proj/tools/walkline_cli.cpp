#include "walkline/cli.hpp"

int main(int argc, char** argv) { return walkline::cli::run(argc, argv); }
