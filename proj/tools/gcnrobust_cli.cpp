#include "gcnrobust/cli.hpp"

int main(int argc, char** argv) { return gcnrobust::cli_main(argc, argv); }
