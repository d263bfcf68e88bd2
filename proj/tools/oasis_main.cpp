#include "oasis/cli.hpp"

int main(int argc, char** argv) { return oasis::run_cli(argc, argv); }
