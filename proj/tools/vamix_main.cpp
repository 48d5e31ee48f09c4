#include "vamix/cli.hpp"

int main(int argc, char** argv) { return vamix::run_cli(argc, argv); }
