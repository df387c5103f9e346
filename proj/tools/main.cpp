#include "soilpick/cli.hpp"

int main(int argc, char** argv) { return soilpick::cli::dispatch(argc, argv); }
