#include "ezgzl/cli/dispatch.hpp"

int main(int argc, char** argv) { return ezgzl::cli::dispatch(argc, argv); }
