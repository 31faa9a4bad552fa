#include "esla/cli.hpp"

int main(int argc, char** argv) {
    return esla::run_cli(argc, argv);
}
