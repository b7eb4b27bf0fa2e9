/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/cli.hpp"

#include <iostream>

int main(int argc, char **argv)
{
    return runtimebox::cli::main(argc, argv, std::cout, std::cerr);
}
