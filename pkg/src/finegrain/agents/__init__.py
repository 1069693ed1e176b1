from .audit import leakage_violations, mask_violations
from .backends import (BackendError, ForesightScript, HashScript, LiveBackend, LiveEmbedder, ReplayBackend,
                       RequestContext, ScriptedBackend, load_backend, prompt_hash)
from .pipeline import MASKABLE, AblationMask, AgentPipeline, median_scores
from .prompts import (MacroInput, NewsInput, PMInput, PromptInputError, PromptRenderer, QualitativeInput,
                      QuantInput, SectorInput, TechnicalInput, render_prompt)
from .reports import (LEVEL1_ROLES, ROLE_SPECS, ROLES, AgentReport, ReportParseError, extract_json_object,
                      fallback_report, parse_report)
from .transcripts import TranscriptRecord, TranscriptStore

__all__ = [
    "AblationMask", "AgentPipeline", "AgentReport", "BackendError", "ForesightScript", "HashScript",
    "LEVEL1_ROLES", "LiveBackend", "LiveEmbedder", "MASKABLE", "MacroInput", "NewsInput", "PMInput",
    "PromptInputError", "PromptRenderer", "QualitativeInput", "QuantInput", "ROLES", "ROLE_SPECS",
    "ReplayBackend", "ReportParseError", "RequestContext", "ScriptedBackend", "SectorInput", "TechnicalInput",
    "TranscriptRecord", "TranscriptStore", "extract_json_object", "fallback_report", "leakage_violations",
    "load_backend", "mask_violations", "median_scores", "parse_report", "prompt_hash", "render_prompt",
]
