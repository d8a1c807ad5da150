#include "respvad/cli.hpp"

int main(int argc, char** argv) { return respvad::cli_main(argc, argv); }
