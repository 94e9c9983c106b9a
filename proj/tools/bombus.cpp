#include "bombus/interface.hpp"

int main(int argc, char** argv) {
    return bombus::interface::run_command(argc, argv);
}
