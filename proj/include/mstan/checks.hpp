#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mstan/errors.hpp"
#include "mstan/program.hpp"
#include "mstan/types.hpp"

namespace mstan {

enum Effect : unsigned {
    kEffectRng = 1,
    kEffectLpdf = 2,
};

std::string effects_text(unsigned effects);

/// Effects allowed in, and blocks visible from, code of a host block.
unsigned block_effects(BlockKind kind);
std::set<BlockKind> block_scope(BlockKind kind);

struct FieldSignature {
    std::vector<Type> args;
    Type ret;

    bool operator==(const FieldSignature&) const = default;
};

struct HoleSignature {
    std::map<std::string, FieldSignature> fields;  // "" is the anonymous field
    unsigned effects = 0;
    std::set<BlockKind> scope;

    const FieldSignature* field(const std::string& name) const;
    bool operator==(const HoleSignature&) const = default;
};

using Signatures = std::map<std::string, HoleSignature>;

/// Acyclic module dependency graph, every referenced hole implemented,
/// unique (hole, implementation) pairs.
std::vector<Diagnostic> validate_structure(const ModularProgram& p);

struct Inference {
    Signatures signatures;
    std::vector<Diagnostic> diagnostics;
};

/// Signatures of every hole. Analyses are memoized from a canonical
/// parents-first traversal; `order`, any topological order of the hole
/// dependency graph, is then visited children-first and cannot change the
/// result.
Inference infer_signatures(const ModularProgram& p, const std::vector<int>* order = nullptr);

/// Semantic constraints: implementations agree with their hole's signature,
/// hole sites and plain code respect the effects and scope of their block,
/// and base and bodies typecheck with holes typed by their signatures.
std::vector<Diagnostic> validate_semantics(const ModularProgram& p, const Signatures& sigs);

struct CheckResult {
    std::vector<Diagnostic> diagnostics;
    Signatures signatures;

    bool ok() const { return diagnostics.empty(); }
};

/// Structure, then signatures and semantics. Stops after structural errors.
CheckResult check_program(const ModularProgram& p);

/// Variables visible to a body: name -> type.
using TypeEnv = std::map<std::string, Type>;

/// Type of `ret` after declaring `body`'s locals in `env`, or void when
/// absent. Holes are typed by `sigs`. Throws CompileError(TYPE_ERROR).
Type return_type(const TypeEnv& env, const std::vector<Stmt>& body, const std::optional<Expr>& ret,
                 const Signatures& sigs = {});

std::string diagnostics_json(const std::vector<Diagnostic>& ds);
std::string diagnostics_text(const std::vector<Diagnostic>& ds);

}  // namespace mstan
