#include "revar/cli.hpp"

int main(int argc, char** argv) { return revar::cli::run(argc, argv); }
