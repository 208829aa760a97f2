#include "fundbasket/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    fundbasket::cli::CommandContext ctx;
    ctx.log = &std::clog;
    return fundbasket::cli::run(argc, argv, ctx);
}
