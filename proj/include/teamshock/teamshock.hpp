#pragma once

#include "teamshock/calendar.hpp"
#include "teamshock/cohort.hpp"
#include "teamshock/config.hpp"
#include "teamshock/corpus.hpp"
#include "teamshock/csv.hpp"
#include "teamshock/digest.hpp"
#include "teamshock/effects.hpp"
#include "teamshock/emoji.hpp"
#include "teamshock/ensemble.hpp"
#include "teamshock/event_model.hpp"
#include "teamshock/features.hpp"
#include "teamshock/heterogeneity.hpp"
#include "teamshock/matrix.hpp"
#include "teamshock/model_io.hpp"
#include "teamshock/model_selection.hpp"
#include "teamshock/pipeline.hpp"
#include "teamshock/random.hpp"
#include "teamshock/report.hpp"
#include "teamshock/stats.hpp"
#include "teamshock/svg.hpp"
#include "teamshock/synthetic.hpp"
#include "teamshock/timeseries.hpp"
#include "teamshock/tree.hpp"
#include "teamshock/version.hpp"
