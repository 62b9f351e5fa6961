#include "exvqa/cli.hpp"

int main(int argc, char** argv) { return exvqa::cli::run(argc, argv); }
