#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "csll/core.hpp"
#include "csll/typecheck.hpp"

namespace gen {

struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine); }
    bool chance(double p) { return std::bernoulli_distribution(p)(engine); }
};

// Any type, depth at most `depth`.
csll::Type random_type(Rng& r, int depth);
// Types built from 1, *, +, cli (and their duals). Every such type, alone in a
// context, is inhabited.
csll::Type random_positive(Rng& r, int depth);

// Every type of depth exactly `depth` (depth >= 1), built on `below` = all types of smaller depth.
std::vector<csll::Type> types_of_depth(int depth, const std::vector<csll::Type>& below);
std::vector<csll::Type> all_types_up_to(int depth);
// Visits the types of depth exactly `depth` in a fixed order until `f` returns false.
// Returns the number visited.
std::uint64_t for_each_type_of_depth(int depth, const std::vector<csll::Type>& below,
                                     const std::function<bool(const csll::Type&)>& f);

struct Generated {
    csll::Program program;  // includes main(x: 1)
    csll::Chan x;
    csll::TypeContext context() const;
};

// A well-typed program at {x : 1}; `fuel` bounds its size.
Generated random_program(Rng& r, int fuel);

// A random process over fresh channels with no typing guarantee, for syntax tests.
csll::Proc random_process(Rng& r, int depth, std::vector<csll::Chan>& free, const csll::Program& callees);

}  // namespace gen
