#pragma once

#include <stdexcept>
#include <string>

namespace conjulab {

/// Invalid scenario/configuration input. CLI exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// A perturbation tuple fails the smallness hypotheses needed by the
/// requested operation. CLI exit code 2.
class admissibility_error : public config_error {
public:
    explicit admissibility_error(const std::string& what) : config_error(what) {}
};

/// The requested tolerance cannot be met within the configured
/// truncation/iteration caps. CLI exit code 3.
class budget_error : public std::runtime_error {
public:
    explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

/// No certificate of (generalized) hyperbolicity could be produced.
class certification_error : public std::runtime_error {
public:
    explicit certification_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace conjulab
