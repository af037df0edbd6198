#include "rb/config.hpp"

int main(int argc, char** argv) { return rb::cli_main(argc, argv); }
