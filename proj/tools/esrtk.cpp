// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file esrtk.cpp
//! Command-line entry point.
//---------------------------------------------------------------------------//
#include <iostream>

#include "esrtk/pipeline.hpp"

int main(int argc, char* argv[])
{
    return esr::cli::run(argc, argv, std::cout, std::cerr);
}
