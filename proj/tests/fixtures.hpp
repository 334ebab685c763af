#pragma once

#include <string>

#include "opfdual/matpower.hpp"
#include "opfdual/serialize.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) {
    return std::string(OPFDUAL_DATA_DIR) + "/" + name;
}

inline opfdual::Network load_case(const std::string& name) {
    return opfdual::parse_network(opfdual::read_file(data_path(name)));
}

inline opfdual::LoadInstance reference_load(const opfdual::Network& net) {
    return {net.ref_p, net.ref_q};
}

}  // namespace fixtures
