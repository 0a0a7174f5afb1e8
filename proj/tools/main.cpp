#include "flexcouple/cli.hpp"

int main(int argc, char** argv) { return flexcouple::run_cli(argc, argv); }
