#include "cli.hpp"

int main(int argc, char** argv) { return curricle::run_cli(argc, argv); }
