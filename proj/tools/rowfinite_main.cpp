#include "rowfinite/cli.hpp"

int main(int argc, char** argv) { return rowfinite::cli::dispatch(argc, argv); }
