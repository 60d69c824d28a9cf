#include "mstan/types.hpp"

#include <set>
#include <string_view>

namespace mstan {

namespace {

using B = Type::Base;

const std::set<std::string, std::less<>> kElementwise = {
    "abs",        "fabs",        "exp",         "log",           "log2",     "log10",
    "log1p",      "expm1",       "sqrt",        "cbrt",          "square",   "inv",
    "inv_sqrt",   "inv_square",  "sin",         "cos",           "tan",      "asin",
    "acos",       "atan",        "sinh",        "cosh",          "tanh",     "asinh",
    "acosh",      "atanh",       "logit",       "inv_logit",     "log_inv_logit",
    "log1m_inv_logit", "Phi",    "Phi_approx",  "inv_Phi",       "lgamma",   "tgamma",
    "digamma",    "erf",         "erfc",        "floor",         "ceil",     "round",
    "trunc",      "log1m",       "inv_cloglog", "step",          "exp2",     "log1m_exp",
    "cumulative_sum", "reverse", "sort_asc",    "sort_desc",     "softmax",  "log_softmax",
};

const std::set<std::string, std::less<>> kBinaryElementwise = {
    "pow", "fmin", "fmax", "fdim", "hypot", "atan2", "lbeta", "log_diff_exp", "fmod",
    "lchoose", "binary_log_loss", "owens_t", "log_mix",
};

const std::set<std::string, std::less<>> kReductions = {
    "sum", "prod", "mean", "variance", "sd", "max", "min", "log_sum_exp", "dot_self",
    "norm1", "norm2", "squared_distance", "distance", "dot_product", "quantile",
};

const std::set<std::string, std::less<>> kIntResult = {
    "size", "num_elements", "rows", "cols", "choose", "int_step", "is_inf", "is_nan",
    "to_int", "rank", "min_int", "max_int",
};

const std::set<std::string, std::less<>> kRealConstants = {
    "pi", "e", "sqrt2", "not_a_number", "positive_infinity", "negative_infinity",
    "machine_precision", "target", "get_lp", "log_determinant", "determinant", "trace",
};

const std::set<std::string, std::less<>> kDistributions = {
    "normal",        "std_normal",       "lognormal",        "cauchy",
    "student_t",     "double_exponential", "logistic",       "gumbel",
    "exponential",   "gamma",            "inv_gamma",        "weibull",
    "frechet",       "rayleigh",         "pareto",           "pareto_type_2",
    "beta",          "beta_proportion",  "uniform",          "chi_square",
    "inv_chi_square", "scaled_inv_chi_square", "von_mises",  "skew_normal",
    "exp_mod_normal", "skew_double_exponential", "bernoulli", "bernoulli_logit",
    "binomial",      "binomial_logit",   "beta_binomial",    "poisson",
    "poisson_log",   "neg_binomial",     "neg_binomial_2",   "neg_binomial_2_log",
    "categorical",   "categorical_logit", "multinomial",     "multinomial_logit",
    "dirichlet",     "multi_normal",     "multi_normal_cholesky", "multi_normal_prec",
    "multi_student_t", "lkj_corr",       "lkj_corr_cholesky", "wishart",
    "inv_wishart",   "ordered_logistic", "ordered_probit",   "normal_id_glm",
    "hypergeometric", "discrete_range",  "wiener",           "loglogistic",
    "gaussian_dlm_obs", "multi_gp",      "multi_gp_cholesky", "bernoulli_logit_glm",
    "poisson_log_glm", "neg_binomial_2_log_glm", "ordered_logistic_glm",
};

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

Type widen(const Type& t) {
    if (t.base == B::Int) return Type::of(B::Real, t.dims);
    return t;
}

Type scalar_reduction(const Type& t) {
    if (t.is_unknown()) return t;
    if (t.dims > 0) {
        // sum over an array of containers yields the container
        if (t.dims == 1) return Type::of(t.base == B::Unknown ? B::Unknown : t.base);
        return Type::of(t.base, t.dims - 1);
    }
    if (t.is_container()) return Type::of(B::Real);
    return t;
}

}  // namespace

std::string type_name(const Type& t) {
    std::string base;
    switch (t.base) {
        case B::Int: base = "int"; break;
        case B::Real: base = "real"; break;
        case B::Complex: base = "complex"; break;
        case B::Vector: base = "vector"; break;
        case B::RowVector: base = "row_vector"; break;
        case B::Matrix: base = "matrix"; break;
        case B::String: base = "string"; break;
        case B::Void: base = "void"; break;
        case B::Unknown: base = "unknown"; break;
        case B::Tuple: {
            base = "tuple(";
            for (std::size_t i = 0; i < t.elems.size(); ++i) base += (i ? ", " : "") + type_name(t.elems[i]);
            base += ")";
            break;
        }
    }
    if (t.dims == 0) return base;
    std::string out = "array[";
    for (int i = 1; i < t.dims; ++i) out += ",";
    return out + "] " + base;
}

Type type_from_spec(const TypeSpec& spec) {
    static const std::set<std::string, std::less<>> vectors = {
        "vector", "simplex", "ordered", "positive_ordered", "unit_vector", "sum_to_zero_vector"};
    static const std::set<std::string, std::less<>> matrices = {
        "matrix", "cov_matrix", "corr_matrix", "cholesky_factor_cov", "cholesky_factor_corr"};
    Type t;
    if (spec.base == "int") t.base = B::Int;
    else if (spec.base == "real") t.base = B::Real;
    else if (spec.base == "complex") t.base = B::Complex;
    else if (spec.base == "row_vector") t.base = B::RowVector;
    else if (vectors.count(spec.base)) t.base = B::Vector;
    else if (matrices.count(spec.base)) t.base = B::Matrix;
    else t.base = B::Unknown;
    t.dims = static_cast<int>(spec.array_dims.size());
    return t;
}

bool assignable(const Type& to, const Type& from) {
    if (to.base == B::Unknown || from.base == B::Unknown) {
        return to.is_unknown() || from.is_unknown() || to.dims == from.dims;
    }
    if (to.dims != from.dims) return false;
    if (to.base == B::Tuple || from.base == B::Tuple) {
        if (to.base != from.base || to.elems.size() != from.elems.size()) return false;
        for (std::size_t i = 0; i < to.elems.size(); ++i) {
            if (!assignable(to.elems[i], from.elems[i])) return false;
        }
        return true;
    }
    if (to.base == from.base) return true;
    if (to.base == B::Real && from.base == B::Int) return true;
    if (to.base == B::Complex && (from.base == B::Int || from.base == B::Real)) return true;
    return false;
}

std::optional<Type> join(const Type& a, const Type& b) {
    if (a.is_unknown()) return b;
    if (b.is_unknown()) return a;
    if (assignable(a, b)) return a.base == B::Unknown ? b : a;
    if (assignable(b, a)) return b.base == B::Unknown ? a : b;
    return std::nullopt;
}

Type arithmetic_result(const std::string& op, const Type& l, const Type& r) {
    if (op == "&&" || op == "||" || op == "==" || op == "!=" || op == "<" || op == "<=" ||
        op == ">" || op == ">=")
        return Type::of(B::Int);
    if (l.base == B::Unknown || r.base == B::Unknown) {
        if (l.is_scalar()) return r;
        if (r.is_scalar()) return l;
        return Type::unknown();
    }
    if (l.dims > 0 || r.dims > 0) return l.dims > 0 ? l : r;
    if (l.is_scalar() && r.is_scalar()) {
        if (op == "/" || op == "%" || op == "+" || op == "-" || op == "*" || op == "^" ||
            op == ".*" || op == "./" || op == ".^")
            return (l.base == B::Int && r.base == B::Int && op != "^" && op != ".^") ? Type::of(B::Int)
                                                                                    : Type::of(B::Real);
        return Type::of(B::Real);
    }
    if (l.base == B::Complex || r.base == B::Complex) return Type::of(B::Complex);
    if (l.is_scalar()) return r;
    if (r.is_scalar()) return l;
    if (op == "*") {
        if (l.base == B::RowVector && r.base == B::Vector) return Type::of(B::Real);
        if (l.base == B::Vector && r.base == B::RowVector) return Type::of(B::Matrix);
        if (l.base == B::Matrix && r.base == B::Vector) return Type::of(B::Vector);
        if (l.base == B::RowVector && r.base == B::Matrix) return Type::of(B::RowVector);
        if (l.base == B::Matrix && r.base == B::Matrix) return Type::of(B::Matrix);
        return l;
    }
    if (op == "/" && r.base == B::Matrix) return l;
    if (op == "\\") return r;
    return l;
}

std::optional<Type> builtin_call(const std::string& name, const std::vector<Type>& args) {
    auto arg = [&](std::size_t i) { return i < args.size() ? args[i] : Type::unknown(); };
    if (kElementwise.count(name)) {
        if (name == "abs" && arg(0).base == B::Int) return arg(0);
        return widen(arg(0));
    }
    if (kBinaryElementwise.count(name)) {
        Type a = arg(0);
        Type b = arg(1);
        Type bigger = (a.dims > 0 || a.is_container()) ? a : b;
        return widen(bigger.base == B::Unknown ? a : bigger);
    }
    if (kReductions.count(name)) {
        if (name == "squared_distance" || name == "distance" || name == "dot_product")
            return Type::of(B::Real);
        if (name == "quantile") return Type::of(B::Real);
        if ((name == "max" || name == "min" || name == "log_sum_exp") && args.size() == 2)
            return (arg(0).is_int() && arg(1).is_int() && name != "log_sum_exp") ? Type::of(B::Int)
                                                                                 : Type::of(B::Real);
        Type r = scalar_reduction(arg(0));
        if (name == "mean" || name == "variance" || name == "sd" || name == "dot_self" ||
            name == "norm1" || name == "norm2" || name == "log_sum_exp")
            r = widen(r);
        return r;
    }
    if (kIntResult.count(name)) return Type::of(B::Int);
    if (kRealConstants.count(name)) return Type::of(B::Real);
    if (name == "rep_vector" || name == "to_vector" || name == "linspaced_vector" ||
        name == "one_hot_vector" || name == "zeros_vector" || name == "ones_vector" ||
        name == "uniform_simplex" || name == "columns_dot_product" || name == "rows_dot_self" ||
        name == "rows_dot_product" || name == "diagonal" || name == "col" || name == "mdivide_left")
        return Type::of(B::Vector);
    if (name == "rep_row_vector" || name == "to_row_vector" || name == "linspaced_row_vector" ||
        name == "row" || name == "columns_dot_self" || name == "zeros_row_vector" ||
        name == "ones_row_vector")
        return Type::of(B::RowVector);
    if (name == "rep_matrix" || name == "to_matrix" || name == "diag_matrix" ||
        name == "identity_matrix" || name == "append_col" || name == "crossprod" ||
        name == "tcrossprod" || name == "inverse" || name == "cholesky_decompose" ||
        name == "diag_pre_multiply" || name == "diag_post_multiply" || name == "quad_form_diag" ||
        name == "add_diag" || name == "multiply_lower_tri_self_transpose" || name == "block" ||
        name == "cov_exp_quad" || name == "gp_exp_quad_cov" || name == "matrix_exp" ||
        name == "lkj_corr_cholesky_rng")
        return Type::of(B::Matrix);
    if (name == "rep_array") {
        Type t = arg(0);
        t.dims += static_cast<int>(args.empty() ? 0 : args.size() - 1);
        return t;
    }
    if (name == "append_row") return arg(0).base == B::RowVector ? Type::of(B::Matrix) : Type::of(B::Vector);
    if (name == "append_array" || name == "head" || name == "tail" || name == "segment" ||
        name == "transpose")
        return arg(0);
    if (name == "to_array_1d") return Type::of(arg(0).base == B::Int ? B::Int : B::Real, 1);
    if (name == "to_array_2d") return Type::of(B::Real, 2);
    if (name == "to_complex") return Type::of(B::Complex);
    if (name == "get_real" || name == "get_imag") return Type::of(B::Real);
    if (name == "num_elements" || name == "sum_int") return Type::of(B::Int);
    if (ends_with(name, "_lpdf") || ends_with(name, "_lpmf") || ends_with(name, "_lcdf") ||
        ends_with(name, "_lccdf") || ends_with(name, "_cdf") || ends_with(name, "_lupdf") ||
        ends_with(name, "_lupmf"))
        return Type::of(B::Real);
    if (ends_with(name, "_rng")) {
        std::string dist = name.substr(0, name.size() - 4);
        if (!builtin_distribution(dist)) return std::nullopt;
        bool vectorised = false;
        for (const auto& a : args) vectorised = vectorised || a.dims > 0 || a.is_container();
        static const std::set<std::string, std::less<>> discrete = {
            "bernoulli", "bernoulli_logit", "binomial", "binomial_logit", "beta_binomial",
            "poisson", "poisson_log", "neg_binomial", "neg_binomial_2", "neg_binomial_2_log",
            "categorical", "categorical_logit", "hypergeometric", "discrete_range", "ordered_logistic"};
        B base = discrete.count(dist) ? B::Int : B::Real;
        return Type::of(base, vectorised ? 1 : 0);
    }
    return std::nullopt;
}

bool builtin_distribution(const std::string& name) { return kDistributions.count(name) > 0; }

}  // namespace mstan
