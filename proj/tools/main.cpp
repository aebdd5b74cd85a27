#include "avreg/cli.hpp"

int main(int argc, char** argv) { return avreg::cli_main(argc, argv); }
