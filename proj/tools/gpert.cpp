#include "gpert/commands.hpp"

int main(int argc, char** argv) { return gpert::run_cli(argc, argv); }
