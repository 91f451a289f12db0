#![no_main]

use ckn_lab::cylfield::{parse_field_csv, CylinderField};
use ckn_lab::params::derive_params;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = parse_field_csv(text) {
            let ps = derive_params(-0.5, 0.0, 2).unwrap();
            if let Ok(field) = CylinderField::from_table(&table, &ps) {
                let mut buf = Vec::new();
                field.write_csv(&mut buf).unwrap();
                let again = parse_field_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
                assert_eq!(again.values, table.values);
            }
        }
    }
});
