#include "specattn/cli.hpp"

int main(int argc, char** argv) { return specattn::cli::run(argc, argv); }
