#include "hbf/somp.hpp"

#include <string>

#include "hbf/error.hpp"

namespace hbf {

SompResult somp_decompose(const CMatrix& f_opt, const CMatrix& a_s, int n_rf)
{
    if (a_s.rows() != f_opt.rows()) throw DimensionError("somp_decompose: dictionary rows must equal n_t");
    if (n_rf < 1 || n_rf > a_s.cols()) {
        throw DimensionError("somp_decompose: n_rf must lie in [1, " + std::to_string(a_s.cols()) + "]");
    }
    SompResult out;
    std::vector<bool> used(a_s.cols(), false);
    CMatrix f_res = f_opt;
    for (int i = 0; i < n_rf; ++i) {
        const RVector score = (a_s.adjoint() * f_res).rowwise().squaredNorm();
        int best = -1;
        for (Eigen::Index k = 0; k < score.size(); ++k) {
            if (used[k]) continue;
            if (best < 0 || score(k) > score(best)) best = static_cast<int>(k);
        }
        used[best] = true;
        out.selected.push_back(best);

        CMatrix f_rf(a_s.rows(), out.selected.size());
        for (std::size_t j = 0; j < out.selected.size(); ++j) f_rf.col(j) = a_s.col(out.selected[j]);
        out.f_bb = f_rf.householderQr().solve(f_opt);
        const CMatrix res = f_opt - f_rf * out.f_bb;
        const double rn = res.norm();
        out.residual_norms.push_back(rn);
        f_res = rn > 0.0 ? CMatrix(res / rn) : CMatrix(res);
        out.f_rf = std::move(f_rf);
    }
    const double approx = (out.f_rf * out.f_bb).norm();
    if (approx > 0.0) {
        out.scale = f_opt.norm() / approx;
        out.f_bb *= out.scale;
    }
    return out;
}

std::vector<CMatrix> HybridPrecoder::effective() const
{
    std::vector<CMatrix> out;
    out.reserve(f_rf.size());
    for (std::size_t m = 0; m < f_rf.size(); ++m) out.push_back(f_rf[m] * f_bb[m]);
    return out;
}

HybridPrecoder assemble_network_hybrid(std::vector<CMatrix> f_rf, std::vector<CMatrix> f_bb)
{
    if (f_rf.size() != f_bb.size()) throw DimensionError("assemble_network_hybrid: node count mismatch");
    HybridPrecoder h;
    h.network_rf = block_diag(f_rf);
    h.network_bb = block_diag(f_bb);
    h.f_rf = std::move(f_rf);
    h.f_bb = std::move(f_bb);
    return h;
}

HybridPrecoder design_hybrid(const DigitalPrecoder& digital, std::span<const CMatrix> a_s, int n_rf)
{
    if (a_s.size() != digital.per_node.size()) throw DimensionError("design_hybrid: one dictionary per node required");
    std::vector<CMatrix> rf;
    std::vector<CMatrix> bb;
    for (std::size_t m = 0; m < a_s.size(); ++m) {
        auto r = somp_decompose(digital.per_node[m], a_s[m], n_rf);
        rf.push_back(std::move(r.f_rf));
        bb.push_back(std::move(r.f_bb));
    }
    return assemble_network_hybrid(std::move(rf), std::move(bb));
}

HybridPenalty hybrid_mse_penalty(const DigitalPrecoder& f_opt, const CMatrix& f_rf, const CMatrix& f_bb,
                                 const DesignProblem& prob, std::size_t node)
{
    if (node >= f_opt.per_node.size()) throw DimensionError("hybrid_mse_penalty: node index out of range");
    std::vector<CMatrix> per_node = f_opt.per_node;
    const CMatrix replacement = f_rf * f_bb;
    if (replacement.rows() != per_node[node].rows() || replacement.cols() != per_node[node].cols()) {
        throw DimensionError("hybrid_mse_penalty: F_RF F_BB shape differs from F_m");
    }
    per_node[node] = replacement;
    const auto hybrid = DigitalPrecoder::from_per_node(std::move(per_node));

    HybridPenalty out;
    out.digital_mse = evaluate_mse_full(f_opt, prob);
    out.hybrid_mse = evaluate_mse_full(hybrid, prob);
    out.penalty = out.hybrid_mse - out.digital_mse;
    out.constraint_residual = constraint_residual(prob.z_blocks, prob.b, hybrid.f);
    return out;
}

}  // namespace hbf
