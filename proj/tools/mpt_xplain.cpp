#include "mptx/cli.hpp"

int main(int argc, char** argv) { return mptx::run_cli(argc, argv); }
