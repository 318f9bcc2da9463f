#include "dockorder/pipeline.hpp"

int main(int argc, char** argv) { return dockorder::cli_main(argc, argv); }
