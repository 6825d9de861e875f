#include "cyberroles/cli.hpp"

int main(int argc, char** argv) { return cyberroles::run_cli(argc, argv); }
