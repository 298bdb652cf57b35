#include "adamatch/cli.hpp"

int main(int argc, char** argv) { return adamatch::run_cli(argc, argv); }
