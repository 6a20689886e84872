#include "evengw/cli.hpp"

int main(int argc, char** argv) { return evengw::cli::run(argc, argv); }
