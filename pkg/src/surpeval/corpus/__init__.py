"""Dataset ingestion, recipes, exclusions, contexts, and transforms."""

from .analysis import (AnalysisTable, JoinError, TransformError,
                       attach_surprisal, transform_response)
from .exclusions import ExclusionError, ExclusionReport, apply_exclusions
from .recipes import (BUILTIN_IDS, DatasetRecipe, ExclusionRule, RecipeError,
                      builtin_recipe, builtin_recipes, load_recipe,
                      parse_recipe, recipe_manifest)
from .stimuli import StimulusError, StimulusItem, build_context, load_stimuli
from .trials import (TrialFileError, TrialRow, TrialSchema, load_trials,
                     schema_for)
