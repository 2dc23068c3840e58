#include "crowdnav/cli.hpp"

int main(int argc, char** argv) { return crowdnav::run_cli(argc, argv); }
