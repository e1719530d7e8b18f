pub mod reference_fixture;
