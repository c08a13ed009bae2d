#pragma once

#include <stdexcept>
#include <string>

namespace nsnet {

// Error categories map to distinct CLI exit codes (see tools/nsnet.cpp).
enum class ErrorKind {
    config = 1,    // bad/missing config value or artifact
    ingest = 2,    // malformed input file
    lookup = 3,    // missing id / artifact content mismatch
    contract = 4,  // internal precondition violated (bug or misuse)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return 2 + static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void fail_ingest(const std::string& msg) { throw Error(ErrorKind::ingest, msg); }
[[noreturn]] inline void fail_lookup(const std::string& msg) { throw Error(ErrorKind::lookup, msg); }
[[noreturn]] inline void fail_contract(const std::string& msg) { throw Error(ErrorKind::contract, msg); }

}  // namespace nsnet
