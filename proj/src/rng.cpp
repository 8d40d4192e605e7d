#include "hbf/rng.hpp"

namespace hbf {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

SeededRng SeededRng::derive(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return SeededRng(h);
}

CMatrix SeededRng::complex_normal_matrix(Eigen::Index rows, Eigen::Index cols)
{
    CMatrix m(rows, cols);
    // Fill in storage order so the draw sequence is layout-defined.
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_normal();
    return m;
}

CVector SeededRng::complex_normal_vector(Eigen::Index n)
{
    CVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = complex_normal();
    return v;
}

}  // namespace hbf
