#include "picert/cli.hpp"

int main(int argc, char** argv) { return picert::cli_main(argc, argv); }
