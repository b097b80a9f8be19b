#pragma once

#include <stdexcept>
#include <string>

namespace crag {

/// Error raised by corpus ingestion, configuration handling, and other
/// non-gateway failures. Gateway failures use GatewayError (gateway.hpp).
class Error : public std::runtime_error {
public:
    explicit Error(std::string message) : std::runtime_error(std::move(message)) {}
};

}  // namespace crag
