#pragma once

#include "sociotag/alias.hpp"
#include "sociotag/analysis.hpp"
#include "sociotag/basis_tagger.hpp"
#include "sociotag/checkpoint.hpp"
#include "sociotag/clustering.hpp"
#include "sociotag/corpus.hpp"
#include "sociotag/crf.hpp"
#include "sociotag/error.hpp"
#include "sociotag/evaluate.hpp"
#include "sociotag/experiments.hpp"
#include "sociotag/features.hpp"
#include "sociotag/log.hpp"
#include "sociotag/lstm.hpp"
#include "sociotag/naive.hpp"
#include "sociotag/node_embed.hpp"
#include "sociotag/numerics.hpp"
#include "sociotag/report.hpp"
#include "sociotag/rng.hpp"
#include "sociotag/social_attention.hpp"
#include "sociotag/socialgraph.hpp"
#include "sociotag/svg.hpp"
#include "sociotag/text.hpp"
