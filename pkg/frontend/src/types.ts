/** JSON shapes exchanged with the engine's HTTP API. */

export type EntryKind =
  | "text"
  | "integer"
  | "real"
  | "flag"
  | "choice"
  | "file"
  | "executable";

export interface Entry {
  name: string;
  kind: EntryKind;
  value: string;
  allowed: string[] | null;
  required: boolean;
  description: string;
}

export interface EntryGroup {
  name: string;
  entries: Entry[];
}

export interface Form {
  item_id: string;
  description: string;
  groups: EntryGroup[];
  actions: string[];
}

export interface ItemRecord {
  id: string;
  type_id: string;
  name: string;
  state: string;
  form: Form;
  project: string;
  created_at: string;
  updated_at: string;
}

export interface JobSnapshot {
  job_id: string;
  status: string;
  exit_code: number | null;
  started_at: string | null;
  ended_at: string | null;
}

export interface StatusDoc {
  item_id: string;
  state: string;
  job: JobSnapshot | null;
  message?: string;
}

export interface JobEvent {
  job_id: string;
  seq: number;
  kind: "status" | "stdout" | "stderr" | "file_staged" | "file_retrieved";
  payload: string;
  timestamp: string;
}

export interface ReviewResult {
  verdict: "Accepted" | "Rejected";
  messages: string[];
}
