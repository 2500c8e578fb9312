#include "dialsynth/cli.hpp"

int main(int argc, char** argv) { return dialsynth::cli::run(argc, argv); }
