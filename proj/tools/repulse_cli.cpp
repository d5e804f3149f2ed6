#include "repulse/cli.hpp"

int main(int argc, char** argv) { return repulse::cli_main(argc, argv); }
