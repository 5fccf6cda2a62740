#ifndef ADABON_HPP
#define ADABON_HPP

#include <adabon/analysis.hpp>
#include <adabon/combiner.hpp>
#include <adabon/distributions.hpp>
#include <adabon/experiment.hpp>
#include <adabon/io.hpp>
#include <adabon/metrics.hpp>
#include <adabon/plot.hpp>
#include <adabon/procedures.hpp>
#include <adabon/simulate.hpp>

#endif // ADABON_HPP
