#pragma once

#include <string>
#include <vector>

namespace plshoot::cli {

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace plshoot::cli
