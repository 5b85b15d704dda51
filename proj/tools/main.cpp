#include "auheat/cli.hpp"

int main(int argc, char** argv) { return auheat::cli_main(argc, argv); }
